#include "prompt_templates.hpp"

namespace hanrag::detail {

const char* const k_decomposer_template = R"PROMPT(You are an expert in English and can see through the essence of any English sentence.
Your current task is to fully understand and analyze the problem I gave you, and decompose the problem to obtain several sub-problems that constitute the problem. You need to follow the following rules:

Rule 1: Your output must be in json format, which contains only 2 keys. The first key is "thought" which represents your analysis and thinking process, and the second key is "decomposition" which represents the list of sub-problems after decomposition;
Rule 2: The question I give you may be the simplest one, that is, it only consists of one question and cannot be decomposed into other sub-problems. In this case, you only need to return the original question to me;

Now I will give you some examples to help you better understand and perform this task:
Example-1:
Query: Who was the first president of the United States?
Answer: {"thought": "This question is a very direct and simple question. There is no need to decompose it. It itself consists of only one sub-problem", "decomposition": ["Who was the first president of the United States?"]}

Example-2:
Query: What honors has Liu Xiang won and when did he retire?
Answer: {"thought": "This question consists of two sub-questions. On the one hand, it asks about the honors Liu Xiang has won, and on the other hand, it asks about the time when Liu Xiang retired, so the original question can be decomposed into two sub-questions.", "decomposition": ["What honors has Liu Xiang won?", "When did Liu Xiang retire?"]}

Example-3:
Query: What departments are there in Mayo Clinic, and which are the most famous ones?
Answer: {"thought": "This question consists of two sub-questions. On the one hand, it asks about the department composition of Mayo Clinic, and on the other hand, it asks about which are the most famous departments of Mayo Clinic, so the original question can be decomposed into two sub-questions.", "decomposition": ["What departments are there in Mayo Clinic?", "What are the most famous departments of Mayo Clinic?"]}

Now I will give you a question, please split it strictly according to the above rules and examples:
Query: <your_query>
Answer:)PROMPT";

const char* const k_router_template = R"PROMPT(You are an expert who is proficient in English and can see through the essence of any English sentence.
Your current task is to fully understand and analyze the question I gave you, and tell me whether it is a super simple common sense question, a simple single-step search question, a compound question, or a complex logical reasoning question. I will now give you the definitions of these types of questions:
1. Straightforward question, which means that this question does not require external knowledge to be queried, and the information you know is enough to answer the question;
2. Single-step question, which means that the information you know cannot answer this question, and you need to use some external knowledge, such as searching the Internet, asking experts, etc. to answer it, but you only need to use external knowledge once;
3. Compound question, which means that this question is composed of multiple sub-questions, but these sub-questions are not related, or the correlation is relatively small, and no complex logical reasoning is required, but the information you know cannot answer the question, and it needs to be broken down into several sub-questions and then answered with the help of an external knowledge base;
3. Complex question, which means that this question is composed of multiple sub-questions through complex logical nesting. There is a very strong logical relationship between these sub-questions. After decomposition, you still need to get the answer to a sub-question before you can continue to answer other sub-questions. That is, the answer to sub-question 1 is the prerequisite for sub-question 2.

Your output needs to follow the following rules:

Rule 1: You need to fully understand and analyze the given query and give your answer;

Rule 2: You only need to give the type of question, and other content is prohibited.

Now I will give you some examples to help you better understand and perform this task: 

Example-1: 
Query: Who is the first President of America? 
Answer: straightforward question 

Example-2: 
Query: Which company acquired Intime Department Store? 
Answer: single-step question 

Example-3: 
Query: What honors did Yao Ming win in the NBA? When did he retire from the NBA? 
Answer: compound question 

Example-4: 
Query: What city is the person who broadened the doctrine of philosophy of language from? 
Answer: complex question 

Example-5: 
Query: What is the scientific classification of conch shells, and what are the common uses of conch shells in various cultures? 
Answer: compound question 

Example-6: 
Query: In which country was Einstein born? 
Answer: straightforward question 

Example-7: 
Query: Who is Colin Kaepernick and what is his preferred nickname? 
Answer: complex question

Example-8:
Query: Where is Pan Jianwei's ancestral home?
Answer: single-step question

Now I will give you a query. Please fully understand it and output it according to the above example and strictly abide by the rules:
Query: <your_query>
Answer:)PROMPT";

const char* const k_refiner_template = R"PROMPT(You are a linguist, proficient in various literary works, and can easily see through the essence of any English sentence.
I want to answer a question, which may be a simple question or a very complex question that requires multiple steps of reasoning to answer. For simple questions, I only need to search once in the search engine to get the answer; for complex questions, I need to solve them step by step. First, I need to refine the first seed question that needs to be answered in the complex question, and then I can further answer the next step of the complex question after answering it. What you need to do is to help me find the seed question in the question I gave.
I will give you two aspects of content. The first is the complex problem mentioned above. The second is some solution steps I got after thinking and disassembling, including multiple seed questions refined from several steps of reasoning, and the answers to these seed questions. Given these two aspects of content, please help me refine the first seed question that needs to be answered in the complex problem. You need to abide by the following rules:
Rule 1: If the problem given to you is a complex problem, then what you need to do is to refer to the thinking process I have completed and help me refine the seed question that needs to be answered next to this complex problem, that is, the first sub-question that must be answered first to answer this problem;
Rule 2: If the problem given to you is a simple single-step problem, then you only need to output the original problem intact;
Rule 3: You must not output any other irrelevant content, which is very important;
Rule 4: The several parts of content I give you are "Question" for complex problems, "Thought" for completed thinking process, if its content is "nothing", it means that there is no completed thinking process, and "Output" for the content you need to output.

Now I will give you some examples to help you better understand this task:
Example-1:
Question: Where was the director of film Eisenstein In Guanajuato born?
Thought: ```nothing```
Output: Who is the director of the film Eisenstein In Guanajuato?
Example-2:
Question: Who is the first President of America?
Thought: ```nothing```
Output: Who is the first President of America?
Example-3:
Question: Who is the father-in-law of Queen Hyojeong?
Thought: 
```
**seed query-1**: Who is the husband of Queen Hyojeong?
**answer-1**: Heonjong of Joseon
```
Output: Who is the father of Heonjong of Joseon?

Now I will give you a question. You should output according to the above rules and examples. Do not output any irrelevant content:
Question: <your_query>
Thought: 
```
<your_thought>
```
Output:)PROMPT";

const char* const k_relevance_template = R"PROMPT(You are a linguist proficient in various literary works.
Your current task is to determine whether the document and the question I provide are related. I will give you a document and a question. This question is a real user's inquiry, and the document is content I have retrieved. The document may or may not be related to the question, so you need to make a judgment.
You must follow these rules:
Rule 1: If the doc is related to question, you must output true; if not, output false.
Rule 2: A very important principle for determining relevance is that if the content of the document can be used to answer the question, whether it directly answers the question or merely serves as a reference to answer the question, it should be considered relevant.
Rule 3: You can only output true or false, and nothing else.

Now I will provide you with some examples to help you better understand and perform this task:
Example-1:
Question: Who was the first president of the United States?
Doc: George Washington (February 22, 1732 – December 14, 1799) was the first president of the United States, serving from 1789 to 1797. As commander of the Continental Army, Washington led Patriot forces to victory in the American Revolutionary War against the British Empire. He has become commonly known as the "Father of His Country" for his role in American independence.
Answer: true
Example-2:
Question: What honors has Liu Xiang received, and when did he retire?
Doc: Liu Xiang (born July 13, 1983), born in Shanghai, with ancestral roots in Xihe Village, Dafeng, Yancheng, Jiangsu, is a Chinese male athlete. He won one Olympic gold medal, six World Championship medals, and three Asian Games gold medals. He is a two-time world champion and held the 110m hurdles world record for 23 months, which still stands as the Olympic record.
Answer: true
Example-3:
Question: Who founded the Mayo Clinic?
Doc: The Mayo Clinic is a medical institution located in Rochester, Minnesota, USA, established in 1864. It has branches in Jacksonville, Florida, and Scottsdale, Arizona, as well as smaller clinics and hospitals in Minnesota, Iowa, and Wisconsin. It is consistently ranked as the best hospital in the world by major authoritative reports.
Answer: false

Now, I will provide you with a question and a document. Please strictly follow the above rules and examples to analyze and output the answer:
Question: <your_query>
Doc: <your_doc>
Answer:)PROMPT";

const char* const k_generator_template = R"PROMPT(You are an expert who is proficient in various fields.
Your current task is to answer the questions I give you based on the documents I give you. The questions are real questions from users, and the documents are some information related to the questions that you have retrieved. You must deliver your predictions in the most concise language. For example, if the answer is a person, just output their name; if the answer is a specific time, simply output the time point; if the answer is "yes" or "no" just output "yes" or "no".

Now let me give you some examples to help you better understand this task: 
Example-1: 
Question: Which year did Liu Xiang retire?
Doc1: ```Liu Xiang (born July 13, 1983), born in Shanghai, with ancestral roots in Xihe Village, Dafeng, Yancheng, Jiangsu, is a Chinese male athlete. He won one Olympic gold medal, six World Championship medals, and three Asian Games gold medals. He is a two-time world champion and held the 110m hurdles world record for 23 months, which still stands as the Olympic record.```
Doc2: ```The Mayo Clinic is a medical institution located in Rochester, Minnesota, USA, established in 1864. It has branches in Jacksonville, Florida, and Scottsdale, Arizona, as well as smaller clinics and hospitals in Minnesota, Iowa, and Wisconsin. It is consistently ranked as the best hospital in the world by major authoritative reports.```
Doc3: ```On April 7, In 2015, Liu announced his retirement in a statement posted to his Sina Weibo. He had not competed since the 2012 Olympic race.```
Answer: 2015
Example-2:
Question: Did Nanjing University found in 1958?
Doc1: ```Nanjing University, located in the ancient capital of China - Nanjing, is one of the oldest and most prestigious institutions of higher learning in the country. Founded in 1902 as Sanjiang Normal School, it has since evolved through various transformations to become the comprehensive university we know today. Renowned for its strong emphasis on academic research and teaching excellence, Nanjing University offers a wide range of disciplines including humanities, social sciences, natural sciences, engineering, and medicine.```
Doc2: ```The University of Science and Technology of China (USTC), founded in 1958 in Beijing and later relocated to Hefei, Anhui Province, is a premier institution dedicated to fostering academic excellence and innovation. USTC is particularly renowned for its strong emphasis on science and technology education and research. As one of the key universities under the national Double First-Class University Plan, it has established itself as a leader in various scientific disciplines including physics, chemistry, life sciences, engineering, and information technology.```
Doc3: ```Nanjing University stands out for its exceptional academic programs across various fields, with several disciplines earning national and international acclaim. The university's Astronomy department is particularly noteworthy, boasting a rich history and pioneering research in astrophysics, cosmology, and radio astronomy. Additionally, the Earth Sciences division, including Geology and related fields, is highly regarded for its comprehensive studies in paleontology, stratigraphy, and tectonic geology.```
Doc4: ```The University of Science and Technology of China (USTC), located in Hefei, Anhui Province, is renowned for its strong emphasis on science and technology education. Established in 1958, USTC has been a pioneer in fostering innovation and cutting-edge research in various scientific fields. On the other hand, the University of Chinese Academy of Sciences (UCAS), with its main campus in Beijing, focuses on graduate education and high-level scientific research. UCAS, established much later in 2012, collaborates closely with the Chinese Academy of Sciences, offering students unique opportunities to engage in advanced research projects under the guidance of leading scientists.```

Now I will give you a question and several documents that you need to fully understand before giving the answer, You only need to output the answer, do not output your thought process or other irrelevant information: 
Question: <your_query>
<your_doc_list>
Answer:)PROMPT";

const char* const k_single_qa_gen_template = R"PROMPT(You are a middle school English teacher.
Your task is to refine a question based on the topic and document I give you, and find the answer to this question from the document. This task is equivalent to building an exam question based on the given document and around the topic.
You need to follow the following rules:
Rule 1: Your output must be in JSON format, containing two keys. The first one is "Question" which means the question you asked based on the given document around the given topic, and the second key is "Answer", which means the answer to the question that can be found directly from the document.
Rule 2: The question you ask must be very simple, and the answer to this question must be answered in a few words, because you are giving exam questions to low-grade junior high school students, and their English level can only find the answer to the question in the document.
Rule 3: The question you ask must be able to find the answer directly from the document, and the answer you give must be a simple entity containing only a few words, because this will be used as the correct answer to the exam question to calculate the student's score.

I'll give you some examples now: 
Example1: 
Title: Liu Xiang 
Doc: Liu Xiang is a legendary Chinese hurdler, widely recognized as one of the greatest athletes in Chinese sports history. He was born on July 13, 1983, in Shanghai. Liu Xiang rose to international fame in 2004 when he won the gold medal in the 110-meter hurdles at the Athens Olympics, becoming the first Chinese male athlete to win an Olympic gold medal in track and field. His victory was historic as he equaled the world record of 12.91 seconds, set by Colin Jackson. 
Output: {"Question": "Which year was Liu Xiang born?", "Answer": "1983"} 
Example2: 
Title: Yao Ming 
Doc: Yao Ming, born on September 12, 1980, is a retired Chinese professional basketball player who played as a center. Standing at 7 feet 6 inches (2.29 meters) tall, he was one of the tallest players in the NBA during his career and became a cultural icon both in China and internationally. Drafted by the Houston Rockets as the first overall pick in the 2002 NBA draft, Yao spent his entire NBA career with the Rockets from 2002 to 2011.
Output: {"Question": "What sports did Yao Ming play?", "Answer": "basketball"}

Now you need to generate according to the above example, you only need to output one question, please do not output any other irrelevant content:
Title: <your_title>
Doc: <your_doc>
Output:)PROMPT";

const char* const k_compound_compose_template = R"PROMPT(I will give you several simple questions. Please combine them into a compound question. Since these questions are all about a certain entity, you need to follow the following rules:
Rule 1: You need to fully understand the given questions and combine them perfectly;
Rule 2: If the given questions cannot be combined, you only need to output "no";
Rule 3: If they can be combined, the combined question must be a compound question, that is, this question must be about a certain entity and ask about several different aspects of the entity.

Now let me give you some examples for your reference: 
Example1: 
Simple Question1: ```When was Arthur's Magazine first published? ``` 
Simple Question2: ```What is the main focus of Arthur's Magazine content? ``` 
Compound Question: ```When was Arthur's Magazine first published, and what is the main focus of its content? ``` 
Example2: 
Simple Question1: ```What frequency does KMBZ-FM broadcast on? ``` 
Simple Question2: ```What music did KMBZ-FM play in 1975? ``` 
Simple Question3: ```What was the share of KMBZ in the Kansas City Arbitron ratings report in February 2011? ``` 
Compound Question: ```What is the broadcasting frequency of KMBZ-FM, what type of music did it play in 1975, and what was its share in the Kansas City Arbitron ratings report in February 2011? ```

Now I will give you these simple questions. You must strictly follow the above rules to output them. It is strictly forbidden to output any other irrelevant content:
<simple_questions>
Compound Question:)PROMPT";

// Ending judgment: answers yes/no given the question and the running trace.
const char* const k_ending_template = R"PROMPT(You are an expert in English and can see through the essence of any English sentence.
Your current task is to decide whether a question can already be answered. I will give you the question and the reasoning steps completed so far, each made of a seed question and its answer. You need to follow the following rules:
Rule 1: If the completed steps already contain the information needed to answer the question, output yes;
Rule 2: If more information still has to be retrieved before the question can be answered, output no;
Rule 3: You can only output yes or no, and nothing else.

Question: <your_query>
Thought: 
```
<your_thought>
```
Answer:)PROMPT";

}  // namespace hanrag::detail
