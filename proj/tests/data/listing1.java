FileWriter writer = new FileWriter(file);
writer.write("This is an example");
int count = 0;
System.out.prinltln("Long gap");
// ......

writer.flush();
writer.close();
